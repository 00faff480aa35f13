# -*- coding: utf-8 -*-

import sys

from pcnet_registration.cli import main

sys.exit(main())
