# Models Package

