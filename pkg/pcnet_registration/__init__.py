# -*- coding: utf-8 -*-

from pcnet_registration.__version__ import __title__, __description__, __version__
