# Source-separation metrics
