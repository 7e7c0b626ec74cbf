import pbr.version

from secure_isac.cli import main
from secure_isac.core import channel
from secure_isac.core import metrics
from secure_isac.core import scenario
from secure_isac.manager import manager

__version__ = pbr.version.VersionInfo('secure_isac').version_string()
