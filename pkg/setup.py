import os

from setuptools import find_packages, setup

# No git checkout available: take the version declared in setup.cfg.
os.environ.setdefault('PBR_VERSION', '0.1.0')

setup(
    setup_requires=['pbr'],
    pbr=True,
    packages=find_packages(include=['secure_isac', 'secure_isac.*']),
)
