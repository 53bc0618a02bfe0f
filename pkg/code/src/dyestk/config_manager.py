import argparse
import logging
import os
import os.path as osp
import random
import numpy as np

from config_parser import parse_config


class ConfigManager:
    """
    Config manager makes run-wide settings available to all commands.
    """

    def __init__(self):
        """
        Initialize config manager.
        """
        self.args = None  # Contains command line arguments passed in.
        self.defaults = None  # Defaults for the optional blocks of a run config.
        self.output_path = None  # Output directory of the command.
        self.seed = None  # Random seed used.
        self.workers = 1  # Monte-Carlo worker processes.

    def setup_seed(self, seed) -> None:
        """
        Update random seed.
        :param seed: New seed.
        """
        self.seed = seed
        np.random.seed(seed % (1 << 32))
        random.seed(seed)
        logging.info("Using seed: %d" % seed)

    def process_args(self, args) -> None:
        """
        Process command line arguments. Creates the output directory and a log file inside it.
        :param args: Command line arguments.
        """
        self.args = args
        self.output_path = args.out
        if not osp.exists(self.output_path):
            os.makedirs(self.output_path)
        logging.basicConfig(level=logging.getLevelName(args.log_level), force=True, handlers=[
            logging.StreamHandler(),
            logging.FileHandler(osp.join(self.output_path, "log.out"))])

        defaults = parse_config(args.defaults)
        self.defaults = defaults.as_dict() if defaults is not None else None
        self.workers = max(1, int(args.workers))
        if args.seed is not None:
            self.setup_seed(int(args.seed))
        logging.info("Args: %s" % str(self.args))

    def add_args(self, parser: argparse.ArgumentParser) -> None:
        """
        Add optional arguments to an argument parser.
        :param parser: Argument parser.
        """
        parser.add_argument("--config", required=True, help="Path to the run config (JSON)")
        parser.add_argument("--seed", help="Seed overriding the config seed (unsigned 64-bit)", default=None, type=int)
        parser.add_argument("--out", help="Output directory", default="./out")
        parser.add_argument("--workers", help="Monte-Carlo worker processes", default=1, type=int)
        parser.add_argument("--q-at-z", default=False, action="store_true",
                            help="Evaluate grad h at L z instead of L prox_{gamma g}(z)")
        parser.add_argument("--defaults", help="Path to defaults.json file",
                            default="./conf/dye/defaults.json")
        parser.add_argument("-l", "--log-level", choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                            default="INFO",
                            help="Set the log level")
