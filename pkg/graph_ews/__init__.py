"""
Early-warning prediction of cooperation collapse in networked evolutionary
games.
"""
