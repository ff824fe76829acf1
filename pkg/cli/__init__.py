"""
Command implementations for the dano CLI
"""
