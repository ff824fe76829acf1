"""Dataset ingestion and feature pipelines"""
