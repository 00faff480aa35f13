
__title__ = 'pcnet_registration'
__description__ = 'Phase congruency feature enhancement and affine registration of multimodal image pairs.'
__url__ = 'https://github.com/pcnet-registration/pcnet_registration'
__version__ = '0.1.0'
__author__ = 'pcnet-registration contributors'
__author_email__ = 'pcnet-registration@users.noreply.github.com'
__license__ = 'OSL-3.0'
__copyright__ = 'Copyright 2026 pcnet-registration contributors'
