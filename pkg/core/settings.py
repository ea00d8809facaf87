"""
Django settings for the ronin project.

Everything a run needs as a default lives here as a flat RONIN_* setting
read from the environment (or a .env file). Command-line flags and config
files override these per run, see pipeline.forms.RunConfigForm.
"""

import json
import os
from pathlib import Path
from dotenv import load_dotenv, find_dotenv
load_dotenv(find_dotenv())

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("SECRET_KEY", "ronin-insecure-local-key")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = int(os.environ.get("DEBUG", default=0))

ALLOWED_HOSTS = os.environ.get("DJANGO_ALLOWED_HOSTS", "localhost 127.0.0.1").split(" ")


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    'detections.apps.DetectionsConfig',
    'masking.apps.MaskingConfig',
    'inpainting.apps.InpaintingConfig',
    'embeddings.apps.EmbeddingsConfig',
    'prompting.apps.PromptingConfig',
    'scoring.apps.ScoringConfig',
    'evaluation.apps.EvaluationConfig',
    'pipeline.apps.PipelineConfig',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'core.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

# Database
# The run registry is small; sqlite next to the project unless told otherwise.

DATABASES = {
    'default': {
        'ENGINE': os.environ.get("SQL_ENGINE", 'django.db.backends.sqlite3'),
        'NAME': os.environ.get("SQL_DATABASE", str(BASE_DIR / 'ronin.sqlite3')),
        'USER': os.environ.get("SQL_USER", ''),
        'PASSWORD': os.environ.get("SQL_PASSWORD", ''),
        'HOST': os.environ.get("SQL_HOST", ''),
        'PORT': os.environ.get("SQL_PORT", ''),
    },
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = '/static/'
STATIC_ROOT = os.path.join(BASE_DIR, 'staticfiles')

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


###########
# Logging #
###########
RONIN_LOG_LEVEL = os.environ.get("RONIN_LOG_LEVEL", "INFO")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': RONIN_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'detections', 'masking', 'inpainting',
                    'embeddings', 'prompting', 'scoring',
                    'evaluation', 'pipeline')
    },
}


# Celery settings
CELERY_BROKER_URL = os.environ.get("CELERY_BROKER_URL", "redis://localhost:6379")
CELERY_RESULT_BACKEND = os.environ.get("CELERY_RESULT_BACKEND", "redis://localhost:6379")
CELERY_TASK_ALWAYS_EAGER = bool(int(os.environ.get("CELERY_TASK_ALWAYS_EAGER", 0)))
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'


##########################
# Pipeline configuration #
##########################
RONIN_MODE = os.environ.get("RONIN_MODE", "class_wise")
RONIN_MASK_RATIO = float(os.environ.get("RONIN_MASK_RATIO", 0.9))
RONIN_STEPS = int(os.environ.get("RONIN_STEPS", 20))
RONIN_ALPHA = float(os.environ.get("RONIN_ALPHA", 2))
RONIN_BETA = float(os.environ.get("RONIN_BETA", 1))
RONIN_EPSILON = float(os.environ.get("RONIN_EPSILON", 1e-6))
RONIN_MCM_TEMPERATURE = float(os.environ.get("RONIN_MCM_TEMPERATURE", 0.01))
RONIN_SEED = int(os.environ.get("RONIN_SEED", 0))

RONIN_INPAINT_TEMPLATE = os.environ.get("RONIN_INPAINT_TEMPLATE", "{label}")
RONIN_SCORING_TEMPLATE = os.environ.get("RONIN_SCORING_TEMPLATE", "a photo of a {label}")
RONIN_REFINED_TEMPLATE = os.environ.get("RONIN_REFINED_TEMPLATE", "{label}{exclusions}")
RONIN_NEGATION = os.environ.get("RONIN_NEGATION", ", not a {concept}")

RONIN_INPAINT_BACKEND = os.environ.get("RONIN_INPAINT_BACKEND", "mock")
RONIN_VL_BACKEND = os.environ.get("RONIN_VL_BACKEND", "mock")
RONIN_VISUAL_BACKEND = os.environ.get("RONIN_VISUAL_BACKEND", "mock")
RONIN_MOCK_DIM = int(os.environ.get("RONIN_MOCK_DIM", 128))
RONIN_ADAPTER_TIMEOUT = float(os.environ.get("RONIN_ADAPTER_TIMEOUT", 300))
RONIN_TAU_OUT = float(os.environ.get("RONIN_TAU_OUT", 2 / 255))

RONIN_EXECUTOR = os.environ.get("RONIN_EXECUTOR", "local")
RONIN_WORKERS = int(os.environ.get("RONIN_WORKERS", 4))

# extra British -> US spellings on top of the built-in table
RONIN_LABEL_ALIASES = json.loads(os.environ.get("RONIN_LABEL_ALIASES", "{}"))
