import argparse
import json
import logging

from django.core.management.base import BaseCommand, CommandError, DjangoHelpFormatter

from packing.conf import load_run_config
from packing.exceptions import PackingError, exit_code_table

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


class PackingHelpFormatter(DjangoHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def exit_code_epilog():
    lines = ["exit codes:", "  0   success", "  2   invalid command-line usage"]
    for code, category, description in exit_code_table():
        lines.append(f"  {code:<3} {category}: {description}")
    return "\n".join(lines)


def split_items(text):
    return [part.strip() for part in text.replace("\n", ",").split(",") if part.strip()]


class PackingCommand(BaseCommand):
    """
    Base for the packing commands: ``--config`` handling, verbosity -> log
    level, and ``PackingError`` -> ``CommandError`` with the error's exit code.
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        kwargs.setdefault("formatter_class", PackingHelpFormatter)
        kwargs.setdefault("epilog", exit_code_epilog())
        return super().create_parser(prog_name, subcommand, **kwargs)

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON file overriding the PACKORDER settings (provider, policy, planner, templates)")

    def handle(self, *args, **options):
        logging.getLogger("packing").setLevel(VERBOSITY_LEVELS.get(options["verbosity"], logging.INFO))
        try:
            config = load_run_config(options.pop("config", None))
            return self.run(config, **options)
        except PackingError as exc:
            raise CommandError(f"[{exc.category}] {exc}", returncode=exc.exit_code) from exc

    def run(self, config, **options):
        raise NotImplementedError

    def write_json(self, document):
        self.stdout.write(json.dumps(document, indent=2, sort_keys=True))


def add_provider_arguments(parser):
    parser.add_argument("--provider", choices=["mock", "live"], help="Chat-completion client (default from settings)")
    parser.add_argument("--live", action="store_true", help="Acknowledge that a live run sends paid API requests")
    parser.add_argument("--fixtures", help="Mock fixture file (list of records or {default, scenes})")
    parser.add_argument("--templates", help="Prompt template file {perception, planning}")


def provider_config(config, options):
    """Provider settings after command-line overrides; live runs need --live."""
    from packing.conf import ProviderKind, override
    from packing.exceptions import ConfigurationError

    provider = override(config.provider, kind=options.get("provider"), fixtures_path=options.get("fixtures"))
    if provider.kind is ProviderKind.LIVE and not options.get("live"):
        raise ConfigurationError("Live provider runs need the --live acknowledgment flag")
    return provider.validate()
