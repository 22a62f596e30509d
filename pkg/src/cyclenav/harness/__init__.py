"""Experiment orchestration: config files, trajectory recording/replay,
probe-task suites, the live-play protocol server and the command line."""
