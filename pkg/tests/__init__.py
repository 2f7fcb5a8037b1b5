"""Test package for ssmi-lab."""
