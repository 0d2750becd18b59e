import mcp_server.app as mcp_app


def test_app_is_named_for_the_tool():
    assert mcp_app.mcp.name == "gesture-forge"
