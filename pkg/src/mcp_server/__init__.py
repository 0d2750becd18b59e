"""MCP wiring modules."""
