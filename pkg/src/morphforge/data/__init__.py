"""Bundled template robot and its canonical alias table."""

from importlib import resources


def template_path():
    return str(resources.files(__name__) / "template.urdf")


def aliases_path():
    return str(resources.files(__name__) / "template_aliases.json")


def default_config_path():
    return str(resources.files(__name__) / "default_config.json")
