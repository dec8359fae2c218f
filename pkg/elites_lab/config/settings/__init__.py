"""
Settings package.

结构说明:
- base.py: 基础配置 (所有环境共享，含 QD_SETTINGS 实验默认参数与日志配置)
- development.py: 开发环境配置 (继承 base，可读日志)
- production.py: 生产环境配置 (继承 base，JSON 日志，从环境变量读取敏感信息)

使用方式:
- 开发环境: DJANGO_SETTINGS_MODULE=config.settings.development
- 生产环境: DJANGO_SETTINGS_MODULE=config.settings.production
"""
