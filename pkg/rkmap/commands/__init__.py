# Subcommands of the rkmap command group

from .fit import fit_command
from .krige import krige_command
from .rk import rk_command
from .semivariogram import periodicity_command, semivariogram_command
from .simulate import simulate_command
from .validate import transect_command, validate_command

commands = [
  semivariogram_command,
  periodicity_command,
  fit_command,
  krige_command,
  rk_command,
  simulate_command,
  validate_command,
  transect_command,
]
