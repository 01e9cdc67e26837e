"""
Główny moduł aplikacji.
Punkt wejścia delegujący do interfejsu wiersza poleceń.
"""

from interfaces.cli import app

if __name__ == "__main__":
    app()
