"""Scenario builders shared by the test modules."""
from ecve import build_scenario, table1_config

_TOP = ("F", "n", "K", "capacity_mb", "total_requests")


def make_config(**kw):
    cfg = table1_config(**{k: kw.pop(k) for k in list(kw) if k in _TOP})
    cfg.update(kw)
    return cfg


def make_scenario(**kw):
    return build_scenario(make_config(**kw))


def tiny_config(F, n, capacity_mb, total_requests, class_map=None):
    """K=1 config with at most two files; classes default to 1 then 2."""
    cfg = table1_config(F=F, n=n, K=1, capacity_mb=capacity_mb, total_requests=total_requests)
    cfg["class_map"] = list(class_map) if class_map is not None else [0, 1][:F]
    return cfg
