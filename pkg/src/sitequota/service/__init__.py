from .app import ServiceConfig, build_service, create_app, serve

__all__ = ["ServiceConfig", "build_service", "create_app", "serve"]
