"""Pydantic schemas for chain files, API bodies and reports"""
