import sys

from qmoment.cli import main


def cli():
    """Run the qmoment command line with `poetry run qmoment <command>` at root level."""
    sys.exit(main())


def table2():
    """Print the four-qubit critical states table with `poetry run table2`."""
    sys.exit(main(["table2", "--text"]))
