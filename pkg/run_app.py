#!/usr/bin/env python3
"""JemDesk启动脚本."""
import os
import sys

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())
