"""Command-line front end and run persistence."""
