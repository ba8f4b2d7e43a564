"""Small stand-in executables for exercising command-line integration."""
