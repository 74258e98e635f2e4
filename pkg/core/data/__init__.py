# Dataset construction: manifests, mixing, batching
