# Configuration management and settings
