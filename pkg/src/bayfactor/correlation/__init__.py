from bayfactor.correlation.truncated import *
from bayfactor.correlation.proper import *
