"""测试包."""
