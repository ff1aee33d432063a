# ABOUTME: Schedulers built on the networks: padding, sliding-shift candidates, baselines
# ABOUTME: Every scheduler returns a Schedule aligned with the instance's task order
