#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
α-IoU 工具命令行启动脚本

用法示例:
    python run.py loss-curve --alphas 0.5,1,2,3 --points 101
    python run.py check-grad --n 1000 --seed 0
    python run.py regress --kind alpha_giou --alphas 1,3 --init 0.3,0.5,0.2,0.2 --gt 0.7,0.5,0.2,0.2
    python run.py perturb --eta 0.3 --seed 0 --in clean.json --out noisy.json
    python run.py eval --gt clean.json --dets noisy.json --thresholds 0.5:0.95:0.05
"""
import sys
import os

# 添加项目根目录到Python路径
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
