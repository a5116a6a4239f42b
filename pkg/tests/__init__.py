"""Tests for the search engine, domains, harness and service."""
