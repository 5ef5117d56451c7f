from bayfactor.data.dataset import *
