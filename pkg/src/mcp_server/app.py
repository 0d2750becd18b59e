from fastmcp import FastMCP

mcp = FastMCP(
    "gesture-forge",
    instructions=(
        "Detects facial gestures in per-subject AU intensity traces and scores how well a subject's "
        "response to the last stimulus is predicted from the earlier ones. Use synthesize_cohort to "
        "write a seeded synthetic cohort, ingest_check to validate traces, and evaluate_cohort to run "
        "the full pipeline (SD and/or SI mode) and get the JSON report. All paths are relative to the "
        "server data directory."
    ),
)
