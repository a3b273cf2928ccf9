from .app import ServeError, ServiceConfig, create_app, serve

__all__ = ["ServeError", "ServiceConfig", "create_app", "serve"]
