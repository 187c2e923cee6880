"""Pipeline configuration and orchestration."""
