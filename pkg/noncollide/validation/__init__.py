# Acceptance suite modules
