# Package marker for DimHunk
__all__ = [
            "assert_env",
            "baselines",
            "config",
            "estimator",
            "geometry",
            "harness",
            "main",
            "planner",
            "point_cloud",
            "samplers",
            "tables",
           ]
