# Initialize routers package
