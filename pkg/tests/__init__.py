# ABOUTME: Test package for edgesched
# ABOUTME: Unit, pipeline, and CLI tests; statistical acceptance checks are marked slow
