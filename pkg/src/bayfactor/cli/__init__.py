from bayfactor.cli.checks import *
from bayfactor.cli.main import cli, load_model
