"""Test suite for hhsharp"""
