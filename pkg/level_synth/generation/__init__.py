"""Level section generation."""
