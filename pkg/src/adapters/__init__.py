"""Adapters for the filesystem: CSV codecs, dataset layout and report files."""
