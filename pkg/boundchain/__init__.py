from boundchain.errors import *
from boundchain.stabilizer import *
from boundchain.density import *
from boundchain.ensemble import *
from boundchain.models import *
from boundchain.protocols import *
from boundchain.verification import *
