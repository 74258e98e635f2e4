# Signal-processing primitives shared by every data path
