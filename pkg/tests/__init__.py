"""Tests for the M/G/1 LI-truncation toolkit"""
