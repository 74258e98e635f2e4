# Generator, discriminators and their losses
