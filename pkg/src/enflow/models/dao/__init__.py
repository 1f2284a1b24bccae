"""Contains the methods to save and load datasets and checkpoints"""
