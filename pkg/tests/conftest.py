def pytest_terminal_summary(terminalreporter):
    lines = [value for rep in terminalreporter.getreports("") + terminalreporter.getreports("passed")
             + terminalreporter.getreports("failed")
             for key, value in getattr(rep, "user_properties", ()) if key == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in dict.fromkeys(lines):
            terminalreporter.write_line(line)
