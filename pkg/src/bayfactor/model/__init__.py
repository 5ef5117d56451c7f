from bayfactor.model.factor import *
