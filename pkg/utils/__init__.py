"""
Utils package for the DANO simulator
"""
