"""Services behind the CLI commands."""
