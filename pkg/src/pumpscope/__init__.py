"""Pump-and-dump event extraction, market-data ingestion and price-impact analysis."""

__version__ = "0.1.0"
