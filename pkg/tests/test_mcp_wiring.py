import importlib

import mcp_server.app as mcp_app


class RecordingMCP:
    def __init__(self) -> None:
        self.tools = []

    def tool(self, func=None, **_kwargs):
        if func is None:
            return lambda f: self._record_tool(f)
        return self._record_tool(func)

    def _record_tool(self, func):
        self.tools.append(func)
        return func


def test_mcp_wiring_registers_tools(monkeypatch):
    recorder = RecordingMCP()
    monkeypatch.setattr(mcp_app, "mcp", recorder)

    import mcp_server.tools as tools

    importlib.reload(tools)

    tool_names = {tool.__name__ for tool in recorder.tools}
    assert tool_names == {"ingest_check", "evaluate_cohort", "synthesize_cohort"}
