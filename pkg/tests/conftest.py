def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    recorded = {line.split("] ", 1)[1].split(":", 1)[0] for line in RESULTS}
    crashed = [r.nodeid for key in ("failed", "error") for r in terminalreporter.stats.get(key, [])
               if "test_acceptance" in r.nodeid]
    if not RESULTS and not crashed:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
    for nodeid in crashed:
        if not any(label.split(" ", 1)[0] in nodeid for label in recorded):
            terminalreporter.write_line(f"[FAIL] {nodeid}: raised before reporting (see traceback)")
