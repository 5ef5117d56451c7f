from bayfactor.sim.scenario import *
from bayfactor.sim.metrics import *
from bayfactor.sim.benchmark import *
