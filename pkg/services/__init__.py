# services package: training, evaluation, configuration, CLI
