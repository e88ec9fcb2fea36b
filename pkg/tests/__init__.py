"""Tests for the chinese-voting-process library."""
