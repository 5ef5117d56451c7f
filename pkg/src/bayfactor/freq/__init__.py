from bayfactor.freq.mle import *
from bayfactor.freq.baselines import *
