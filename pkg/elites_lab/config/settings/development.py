"""
Django 开发环境配置
"""

from .base import *  # noqa: F401, F403

# =============================================================================
# 安全配置 (开发环境)
# =============================================================================

SECRET_KEY = "django-insecure-qd-lab-development-only"

DEBUG = True
