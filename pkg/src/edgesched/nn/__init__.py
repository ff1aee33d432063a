# ABOUTME: Minimal float64 neural stack with manual backpropagation
# ABOUTME: Layers, losses, Adam, gradient checks, scheduling networks, checkpoints, training
