"""Tests for the liquidity-recycling toolkit"""
