# Unit tests for the groupreid modules
