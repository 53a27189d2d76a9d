"""Shipped chain definitions (JSON)"""
