from bayfactor.gibbs.polyagamma import *
from bayfactor.gibbs.sampler import *
