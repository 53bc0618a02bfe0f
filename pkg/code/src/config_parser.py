import json
import os.path as osp
import logging

from dyestk.exceptions import ParseError, SchemaError


class Config:
    """
    Configuration item.
    """

    def __init__(self, config_dict: dict):
        """
        Initialize configuration item using a dictionary.
        :param config_dict: Nested dictionary. Nested dictionaries become nested Config items.
        """
        self.config_dict = config_dict
        for k, v in config_dict.items():
            if isinstance(v, dict):
                v = Config(v)
            self.__dict__[k] = v

    def as_dict(self):
        return self.config_dict

    def __getitem__(self, key):
        return self.__dict__[key]

    def __contains__(self, key):
        return key in self.config_dict


def _reject_duplicates(pairs):
    result = {}
    for k, v in pairs:
        if k in result:
            raise SchemaError(k, "duplicate key")
        result[k] = v
    return result


def load_json_text(text: str):
    """
    Strictly parse a JSON document.
    :param text: Document text.
    :return: Parsed value.
    :raises ParseError: with the 1-based line of the syntax error.
    """
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicates, parse_constant=_bad_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg)


def _bad_constant(name):
    raise SchemaError(name, "non-finite numbers are not allowed")


def parse_config(config_path: str):
    """
    Parses a json config file into a Config object.
    :param config_path: Path to the json config file.
    """
    if not osp.exists(config_path):
        logging.warning(f"Config file not found: {config_path}")
        return None

    with open(config_path, "r") as f:
        config_dict = load_json_text(f.read())
    if isinstance(config_dict, dict):
        return Config(config_dict)
    else:
        return config_dict
