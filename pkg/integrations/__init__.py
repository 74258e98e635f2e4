# integrations package: audio files, checkpoints, logs, plots
